import os
from flask import Flask, request
from werkzeug.utils import secure_filename

app = Flask(__name__)


@app.route("/upload", methods=["GET"])
def show():
    fname = secure_filename(request.args.get("f", ""))
    with open(os.path.join("/srv/uploads", fname)) as fh:
        return fh.read()
