def find_user(conn, username):
    sql = "SELECT * FROM accounts WHERE username = '{}'".format(username)
    cursor = conn.cursor()
    cursor.execute(sql)
    return cursor.fetchone()
