import sqlite3


def connect(path: str) -> sqlite3.Connection:
    return sqlite3.connect(path)


def find_user(conn: sqlite3.Connection, name: str) -> list[str]:
    cur = conn.cursor()
    cur.execute("SELECT email FROM users WHERE name = ?", (name,))
    return [row[0] for row in cur.fetchall()]


def count_users(conn: sqlite3.Connection) -> int:
    cur = conn.cursor()
    cur.execute("SELECT COUNT(*) FROM users")
    row = cur.fetchone()
    return row[0]


def add_user(conn, name: str, email: str) -> None:
    conn.execute("INSERT INTO users VALUES (?, ?)", (name, email))
    conn.commit()


def user_label(name: str, admin: bool) -> str:
    if admin:
        return name + " (admin)"
    return 0
