import os


def extension(path: str) -> str:
    _, ext = os.path.splitext(path)
    return ext


def join_all(parts: list[str]) -> str:
    result = ""
    for part in parts:
        result = os.path.join(result, part)
    return result


def depth(path: str) -> int:
    return len(path.strip("/").split("/"))


def is_hidden(path: str) -> bool:
    return os.path.basename(path).startswith(".")


def ensure_dir(path) -> None:
    if not os.path.isdir(path):
        os.makedirs(path)


def parent(path: str) -> str:
    if path == "/":
        return
    return os.path.dirname(path)


def safe_name(name: str) -> str:
    while True:
        if "/" not in name:
            return name
        name = name.replace("/", "_")
