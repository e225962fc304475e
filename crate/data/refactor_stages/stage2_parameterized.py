import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
cur = conn.cursor()
max_price = input()
min_rating = input()
query = "SELECT name FROM products WHERE price < ? AND rating > ? ORDER BY name"
cur.execute(query, (max_price, min_rating))
for row in cur.fetchall():
    print(row[0])
