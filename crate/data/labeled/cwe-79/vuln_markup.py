from flask import request
from markupsafe import Markup


def profile():
    bio = request.form["bio"]
    return Markup(bio)
