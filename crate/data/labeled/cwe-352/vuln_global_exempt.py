from flask import Flask
from flask_wtf.csrf import CSRFProtect

app = Flask(__name__)
csrf = CSRFProtect(app)


@app.route("/webhook", methods=["POST"])
@csrf.exempt
def webhook():
    return "accepted"
