import os
from flask import Flask, request

app = Flask(__name__)


@app.route("/thumb")
def thumb():
    src = request.args["file"]
    code = os.system("convert " + src + " -resize 64x64 thumb.png")
    return str(code)
