from flask import Flask, request
from flask_wtf.csrf import CSRFProtect

app = Flask(__name__)
CSRFProtect(app)


@app.route("/profile", methods=["POST"])
def update_profile():
    return request.form.get("nickname", "")
