from pathlib import Path


def load_template(name):
    base = Path("/srv/templates")
    target = base / name
    return target.read_text()
