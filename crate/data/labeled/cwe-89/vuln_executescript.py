import sqlite3
import sys

table = sys.stdin.readline().strip()
conn = sqlite3.connect("scratch.db")
script = "DROP TABLE IF EXISTS " + table + "; CREATE TABLE " + table + " (id INTEGER);"
conn.executescript(script)
