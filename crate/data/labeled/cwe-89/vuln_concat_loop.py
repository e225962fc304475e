import sqlite3

ids = input().split(",")
clause = ""
for i in ids:
    if clause:
        clause = clause + " OR "
    clause = clause + "id = " + i.strip()
conn = sqlite3.connect("orders.db")
cur = conn.cursor()
cur.execute("SELECT total FROM orders WHERE " + clause)
print(cur.fetchall())
