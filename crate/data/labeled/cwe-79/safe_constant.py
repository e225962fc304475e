def footer():
    year = 2024
    return f"<footer>&copy; {year} Example Corp</footer>"
