def get_orders(conn, customer):
    query = "SELECT id, total FROM orders " + "WHERE customer = :customer"
    return conn.execute(query, {"customer": customer}).fetchall()
