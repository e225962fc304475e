import sqlite3

conn = sqlite3.connect("shop.db")
cur = conn.cursor()
max_price = input()
min_price = input()
query = f"SELECT * FROM items WHERE price < {max_price} AND price > {min_price}"
cur.execute(query)
for row in cur.fetchall():
    print(row)
