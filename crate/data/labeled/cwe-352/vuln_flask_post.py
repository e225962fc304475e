from flask import Flask, request, session

app = Flask(__name__)


@app.route("/transfer", methods=["POST"])
def transfer():
    amount = float(request.form["amount"])
    target = request.form["to"]
    session["balance"] = session.get("balance", 0) - amount
    return f"sent {amount} to {target}"
