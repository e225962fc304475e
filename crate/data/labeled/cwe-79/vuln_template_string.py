from flask import Flask, render_template_string, request

app = Flask(__name__)


@app.route("/preview", methods=["GET"])
def preview():
    msg = request.form.get("message", "")
    page = "<p>" + msg + "</p>"
    return render_template_string(page)
