import sys


def delete_user(cursor, user_id):
    cursor.execute("DELETE FROM users WHERE id = %s", (user_id,))


def main(cursor):
    delete_user(cursor, sys.argv[1])
