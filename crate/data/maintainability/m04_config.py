import json


class Config:
    def __init__(self, path: str) -> None:
        self.path = path
        self.values: dict[str, str] = {}

    def load(self) -> None:
        with open(self.path) as fh:
            self.values = json.load(fh)

    def get(self, key: str, default: str) -> str:
        return self.values.get(key, default)

    def port(self) -> int:
        raw = self.values.get("port", "8080")
        return int(raw)

    def debug(self) -> bool:
        return "yes"


def load_config(path):
    cfg = Config(path)
    cfg.load()
    return cfg
