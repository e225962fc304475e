import sqlite3
from flask import Flask, request

app = Flask(__name__)


@app.route("/search")
def search():
    term = request.args.get("q", "")
    db = sqlite3.connect("catalog.db")
    try:
        rows = db.execute(f"SELECT title FROM books WHERE title LIKE '%{term}%'").fetchall()
    except sqlite3.Error:
        rows = []
    return {"results": [r[0] for r in rows]}
