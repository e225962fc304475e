import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
cur = conn.cursor()
max_price = input()
min_rating = input()
query = f"SELECT name FROM products WHERE price < {max_price} AND rating > {min_rating} ORDER BY name"
cur.execute(query)
for row in cur.fetchall():
    print(row[0])
