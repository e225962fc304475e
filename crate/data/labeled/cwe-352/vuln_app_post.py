from flask import Flask

app = Flask(__name__)
ITEMS = {}


@app.post("/items/<key>/delete")
def delete_item(key):
    ITEMS.pop(key, None)
    return "", 204
