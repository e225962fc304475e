import sqlite3


class Report:
    def __init__(self, conn, column):
        self.conn = conn
        self.column = column

    def run(self):
        cur = self.conn.cursor()
        cur.execute("SELECT " + self.column + " FROM sales ORDER BY 1")
        return cur.fetchall()


if __name__ == "__main__":
    col = input()
    print(Report(sqlite3.connect("sales.db"), col).run())
