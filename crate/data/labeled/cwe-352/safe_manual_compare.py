from flask import Flask, abort, request, session

app = Flask(__name__)


@app.route("/logout", methods=["POST"])
def logout():
    if request.form.get("csrf_token") != session.get("csrf_token"):
        abort(403)
    session.clear()
    return "bye"
