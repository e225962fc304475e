import sqlite3
import sys

name = sys.argv[1]
db = sqlite3.connect("users.db")
rows = db.execute("SELECT id, email FROM users WHERE name = '%s'" % name).fetchall()
print(len(rows))
