import sqlite3


def read_name():
    raw = input("name: ")
    return raw.strip()


def lookup(cur, who):
    cur.execute("SELECT phone FROM contacts WHERE name = '" + who + "'")
    return cur.fetchall()


def main():
    conn = sqlite3.connect("contacts.db")
    name = read_name()
    print(lookup(conn.cursor(), name))


main()
