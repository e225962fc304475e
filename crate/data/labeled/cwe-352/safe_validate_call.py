from flask import Flask, request
from flask_wtf.csrf import validate_csrf

app = Flask(__name__)


@app.route("/password", methods=["POST"])
def change_password():
    validate_csrf(request.form.get("csrf_token"))
    return "changed"
