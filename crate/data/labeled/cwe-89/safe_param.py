import sqlite3

conn = sqlite3.connect("shop.db")
cur = conn.cursor()
max_price = input()
min_price = input()
cur.execute("SELECT * FROM items WHERE price < ? AND price > ?", (max_price, min_price))
for row in cur.fetchall():
    print(row)
