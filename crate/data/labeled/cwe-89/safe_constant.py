import sqlite3

conn = sqlite3.connect("stats.db")
cur = conn.cursor()
cur.execute("SELECT COUNT(*) FROM visits")
print(cur.fetchone()[0])
