import sqlite3

limit = int(input())
conn = sqlite3.connect("log.db")
cur = conn.cursor()
cur.execute(f"SELECT message FROM events ORDER BY ts DESC LIMIT {limit}")
print(cur.fetchall())
