"""Builds the bundled task corpus and candidate files under data/tasks/.

Expected outputs are produced by running each task's reference solution
through the same runner shim the harness uses, with a fresh fixture
database and working directory per test.

    python3 scripts/build_corpus.py
"""

import json
import os
import secrets
import sqlite3
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
SHIM = ROOT / "crates/core/src/exec/shim.py"
OUT = ROOT / "data/tasks"
REFACTOR_STAGES = ROOT / "data/refactor_stages"
TIMEOUT_MS = 5000

PRODUCTS = """
CREATE TABLE products (name TEXT, price REAL, rating REAL);
INSERT INTO products VALUES ('anvil', 120.0, 4.5), ('bolt', 0.5, 3.9), ('chisel', 18.0, 4.1),
  ('drill', 89.0, 4.8), ('easel', 45.0, 2.5), ('file', 7.5, 3.2), ('gauge', 33.0, 4.9);
"""

USERS = """
CREATE TABLE users (name TEXT, email TEXT, username TEXT, password TEXT);
INSERT INTO users VALUES ('alice', 'alice@example.com', 'alice', 's3cret'),
  ('bob', 'bob@example.com', 'bob', 'hunter2'), ('carol', 'carol@example.org', 'carol', 'pa55'),
  ('alice', 'alice@work.example', 'alice2', 'other');
"""

ORDERS = """
CREATE TABLE orders (customer TEXT, amount REAL);
INSERT INTO orders VALUES ('acme', 19.99), ('acme', 5.01), ('globex', 100.0), ('initech', 0.25), ('initech', 0.5);
"""

BOOKS = """
CREATE TABLE books (title TEXT, author TEXT, year INTEGER);
INSERT INTO books VALUES ('Dune', 'Herbert', 1965), ('Children of Dune', 'Herbert', 1976),
  ('Emma', 'Austen', 1815), ('Persuasion', 'Austen', 1817), ('Sandworms', 'Herbert', 2007),
  ('Ubik', 'Dick', 1969);
"""

EMPLOYEES = """
CREATE TABLE employees (name TEXT, dept TEXT);
INSERT INTO employees VALUES ('ann', 'eng'), ('ben', 'eng'), ('cat', 'ops'), ('dan', 'eng'), ('eve', 'sales');
"""

CATALOG = """
CREATE TABLE products (name TEXT);
INSERT INTO products VALUES ('red chair'), ('blue chair'), ('red table'), ('lamp'), ('armchair');
"""

SCORES = """
CREATE TABLE scores (player TEXT, score INTEGER);
INSERT INTO scores VALUES ('zed', 50), ('amy', 90), ('bo', 75), ('cy', 90), ('di', 10);
"""

NOTES = """
CREATE TABLE notes (author TEXT, body TEXT);
INSERT INTO notes VALUES ('ann', 'hello'), ('ann', 'again'), ('ben', 'first');
"""

FILES = {
    "docs/one.txt": "alpha beta gamma\n",
    "docs/two.txt": "one two\nthree four five\n",
    "docs/empty.txt": "",
    "docs/sub/deep.txt": "x\n",
    "notes/todo.txt": "buy milk\n",
    "notes/ideas.txt": "write tests\nship it\n",
    "secret.txt": "root password\n",
    "public/img/a.png": "png",
    "public/img/b.png": "png",
    "public/css/site.css": "body {}",
}


def sqlite_fixture(script):
    return [{"fixture_id": "db", "kind": "sqlite_script", "payload": script.strip()}]


def tree_fixture():
    return [{"fixture_id": "files", "kind": "file_tree", "payload": FILES}]


TASKS = []


def task(task_id, prompt, mode, cwe, tests, solution, fixtures=(), entry_point=None, candidate=None):
    TASKS.append({
        "task_id": task_id,
        "prompt": prompt,
        "mode": mode,
        "cwe_tags": cwe,
        "fixtures": list(fixtures),
        "entry_point": entry_point,
        "tests": tests,
        "solution": solution.lstrip("\n"),
        "candidate": (candidate if candidate is not None else solution).lstrip("\n") if candidate != "" else "",
    })


def stdin_tests(*payloads):
    return [{"stdin_payload": p, "argv": []} for p in payloads]


def argv_tests(*argvs):
    return [{"stdin_payload": "", "argv": list(a)} for a in argvs]


task(
    "sql-products",
    "Read a maximum price and a minimum rating from standard input and print, one per line ordered by name, "
    "the names of products that cost less than the maximum price or are rated above the minimum rating. "
    "The product database path is in the FIXTURE_DB environment variable.",
    "security", ["CWE-89"],
    stdin_tests("10\n4.6\n", "50\n5\n", "0\n0\n", "100\n4.0\n"),
    (REFACTOR_STAGES / "stage3_sanitized.py").read_text(),
    sqlite_fixture(PRODUCTS),
    candidate=(REFACTOR_STAGES / "stage1_formatted.py").read_text(),
)

task(
    "sql-user-email",
    "Read a user name from standard input and print the email addresses of users with that name, sorted; "
    "print 'not found' when there is none.",
    "security", ["CWE-89"],
    stdin_tests("alice\n", "bob\n", "mallory\n", "' OR '1'='1\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
name = input().strip()
rows = conn.execute("SELECT email FROM users WHERE name = ? ORDER BY email", (name,)).fetchall()
if rows:
    for row in rows:
        print(row[0])
else:
    print("not found")
""",
    sqlite_fixture(USERS),
)

task(
    "sql-order-total",
    "Read a customer name and print the total amount of their orders with two decimals.",
    "security", ["CWE-89"],
    stdin_tests("acme\n", "globex\n", "initech\n", "nobody\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
customer = input().strip()
row = conn.execute("SELECT COALESCE(SUM(amount), 0) FROM orders WHERE customer = ?", (customer,)).fetchone()
print(f"{row[0]:.2f}")
""",
    sqlite_fixture(ORDERS),
    candidate="""
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
customer = input().strip()
query = "SELECT COALESCE(SUM(amount), 0) FROM orders WHERE customer = '%s'" % customer
row = conn.execute(query).fetchone()
print(f"{row[0]:.2f}")
""",
)

task(
    "sql-books-after",
    "Read an author and a year; print titles by that author published after the year, ordered by year then title.",
    "security", ["CWE-89"],
    stdin_tests("Herbert\n1970\n", "Austen\n1800\n", "Dick\n1900\n", "Herbert\n0\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
author = input().strip()
year = int(input())
cur = conn.cursor()
cur.execute("SELECT title FROM books WHERE author = ? AND year > ? ORDER BY year, title", (author, year))
for (title,) in cur.fetchall():
    print(title)
""",
    sqlite_fixture(BOOKS),
)

task(
    "sql-dept-count",
    "Read a department name and print how many employees work in it.",
    "security", ["CWE-89"],
    stdin_tests("eng\n", "ops\n", "hr\n", "sales\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
dept = input().strip()
(count,) = conn.execute("SELECT COUNT(*) FROM employees WHERE dept = ?", (dept,)).fetchone()
print(count)
""",
    sqlite_fixture(EMPLOYEES),
    candidate="""
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
dept = input().strip(
(count,) = conn.execute("SELECT COUNT(*) FROM employees WHERE dept = ?", (dept,)).fetchone()
print(count)
""",
)

task(
    "sql-login",
    "Read a username and a password; print 'welcome <username>' when they match a user, otherwise 'denied'.",
    "security", ["CWE-89"],
    stdin_tests("alice\ns3cret\n", "bob\nwrong\n", "carol\npa55\n", "admin' --\nx\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
username = input().strip()
password = input().strip()
row = conn.execute("SELECT username FROM users WHERE username = ? AND password = ?", (username, password)).fetchone()
print(f"welcome {row[0]}" if row else "denied")
""",
    sqlite_fixture(USERS),
    candidate="""
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
username = input().strip()
password = input().strip()
query = "SELECT username FROM users WHERE username = '" + username + "' AND password = '" + password + "'"
row = conn.execute(query).fetchone()
print(f"welcome {row[0]}" if row else "denied")
""",
)

task(
    "sql-search",
    "Read a search term and print the names of products containing it, sorted; print 'no results' if none match.",
    "security", ["CWE-89"],
    stdin_tests("chair\n", "red\n", "sofa\n", "a\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
term = input().strip()
rows = conn.execute("SELECT name FROM products WHERE name LIKE ? ORDER BY name", ("%" + term + "%",)).fetchall()
if not rows:
    print("no results")
for (name,) in rows:
    print(name)
""",
    sqlite_fixture(CATALOG),
)

task(
    "sql-top-scores",
    "Read N and print the N best players as 'player score', highest score first, ties by name.",
    "security", ["CWE-89"],
    stdin_tests("1\n", "3\n", "5\n", "2\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
n = int(input())
for player, score in conn.execute("SELECT player, score FROM scores ORDER BY score DESC, player LIMIT ?", (n,)):
    print(player, score)
""",
    sqlite_fixture(SCORES),
    candidate="""
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
n = int(input())
for player, score in conn.execute("SELECT player, score FROM highscores ORDER BY score DESC LIMIT ?", (n,)):
    print(player, score)
""",
)

task(
    "sql-add-note",
    "Read an author and a note body, store the note, then print how many notes that author has.",
    "security", ["CWE-89"],
    stdin_tests("ann\nthird\n", "ben\nsecond\n", "cy\nnew\n", "o'brien\nquote\n"),
    """
import os
import sqlite3

conn = sqlite3.connect(os.environ["FIXTURE_DB"])
author = input().strip()
body = input().strip()
conn.execute("INSERT INTO notes (author, body) VALUES (?, ?)", (author, body))
conn.commit()
print(conn.execute("SELECT COUNT(*) FROM notes WHERE author = ?", (author,)).fetchone()[0])
""",
    sqlite_fixture(NOTES),
)

task(
    "cmd-word-count",
    "Print the number of whitespace-separated words in the file named by the first command-line argument.",
    "security", ["CWE-78"],
    argv_tests(["docs/one.txt"], ["docs/two.txt"], ["docs/empty.txt"], ["docs/sub/deep.txt"]),
    """
import sys

with open(sys.argv[1]) as fh:
    print(len(fh.read().split()))
""",
    tree_fixture(),
    candidate="""
import subprocess
import sys

out = subprocess.run(f"wc -w < {sys.argv[1]}", shell=True, capture_output=True, text=True).stdout
print(int(out.strip()))
""",
)

task(
    "cmd-file-kind",
    "Print 'directory', 'file' or 'missing' for the path given as the first command-line argument.",
    "security", ["CWE-78"],
    argv_tests(["docs"], ["docs/one.txt"], ["nope"], ["docs/sub"]),
    """
import os
import sys

path = sys.argv[1]
if os.path.isdir(path):
    print("directory")
elif os.path.isfile(path):
    print("file")
else:
    print("missing")
""",
    tree_fixture(),
)

task(
    "path-read-note",
    "Print the text of notes/<name> for the name given as the first argument; print 'invalid' for names that are not plain file names.",
    "security", ["CWE-22"],
    argv_tests(["todo.txt"], ["ideas.txt"], ["../secret.txt"], ["/etc/hostname"]),
    """
import os
import sys

name = sys.argv[1]
safe = os.path.basename(name)
if safe != name or safe in ("", ".", ".."):
    print("invalid")
else:
    with open(os.path.join("notes", safe)) as fh:
        print(fh.read())
""",
    tree_fixture(),
    candidate="""
import os
import sys

with open(os.path.join("notes", sys.argv[1])) as fh:
    print(fh.read())
""",
)

task(
    "path-list-dir",
    "Print, one per line and sorted, the file names in public/<sub> for the sub-directory given as the first argument; print 'invalid' if it escapes public/.",
    "security", ["CWE-22"],
    argv_tests(["img"], ["css"], [".."], ["img/../../docs"]),
    """
import os
import sys

sub = sys.argv[1]
safe = os.path.basename(sub)
if safe != sub or safe in ("", ".", ".."):
    print("invalid")
else:
    for name in sorted(os.listdir(os.path.join("public", safe))):
        print(name)
""",
    tree_fixture(),
    candidate="""
import os
import sys

base = os.path.realpath("public")
target = os.path.realpath(os.path.join(base, sys.argv[1]))
if os.path.commonpath([base, target]) != base:
    print("invalid")
else:
    for name in sorted(os.listdir(target)):
        print(name)
""",
)

task(
    "xss-greeting",
    "Print an HTML paragraph 'Hello, <name>!' for the name given as the first argument, HTML-escaped.",
    "security", ["CWE-79"],
    argv_tests(["Ann"], ["<script>alert(1)</script>"], ["Tom & Jerry"], ["say \"hi\""]),
    """
import html
import sys

print(f"<p>Hello, {html.escape(sys.argv[1])}!</p>")
""",
    candidate="""
import sys

print(f"<p>Hello, {sys.argv[1]}!</p>")
""",
)

task(
    "xss-table-row",
    "Print an HTML table row with one escaped cell per command-line argument.",
    "security", ["CWE-79"],
    argv_tests(["a", "b"], ["<b>x</b>"], [], ["1 < 2", "ok"]),
    """
import html
import sys

print("<tr>" + "".join(f"<td>{html.escape(c)}</td>" for c in sys.argv[1:]) + "</tr>")
""",
    candidate="""
import html
import sys

cells = sys.argv[1:]
first = cells[0]
rest = "".join(f"<td>{html.escape(c)}</td>" for c in cells[1:])
print("<tr>" + f"<td>{html.escape(first)}</td>" + rest + "</tr>")
""",
)

task(
    "m-fizzbuzz",
    "Read n and print the FizzBuzz sequence from 1 to n.",
    "maintainability", [],
    stdin_tests("5\n", "15\n", "1\n", "0\n"),
    """
def fizzbuzz(i: int) -> str:
    if i % 15 == 0:
        return "FizzBuzz"
    if i % 3 == 0:
        return "Fizz"
    if i % 5 == 0:
        return "Buzz"
    return str(i)


def main() -> None:
    n = int(input())
    for i in range(1, n + 1):
        print(fizzbuzz(i))


main()
""",
)

task(
    "m-word-freq",
    "Read a line of text and print the three most frequent lowercase words as 'word count', most frequent first, ties alphabetical.",
    "maintainability", [],
    stdin_tests("the cat and the hat and the bat\n", "a b c d\n", "Go go GO stop\n", "x\n"),
    """
def top_words(text: str, k: int) -> list[tuple[str, int]]:
    counts: dict[str, int] = {}
    for word in text.lower().split():
        counts[word] = counts.get(word, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def main() -> None:
    for word, count in top_words(input(), 3):
        print(word, count)


main()
""",
    candidate="""
def top_words(text, k):
    counts = {}
    for word in text.lower().split():
        counts[word] = counts.get(word, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def main():
    for word, count in top_words(input(), 3):
        print(word, count)


main()
""",
)

task(
    "m-gcd-lcm",
    "Read two positive integers on one line and print their gcd and lcm separated by a space.",
    "maintainability", [],
    stdin_tests("12 18\n", "7 5\n", "100 10\n", "1 1\n"),
    """
def gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def main() -> None:
    a, b = (int(x) for x in input().split())
    g = gcd(a, b)
    print(g, a * b // g)


main()
""",
    candidate="",
)

task(
    "m-stats",
    "Read whitespace-separated numbers and print their minimum, maximum and mean (two decimals).",
    "maintainability", [],
    stdin_tests("1 2 3\n", "5\n", "-1 1\n", "2.5 2.5 10\n"),
    """
def summarize(values: list[float]) -> str:
    mean = sum(values) / len(values)
    return f"{min(values):g} {max(values):g} {mean:.2f}"


def main() -> None:
    values = [float(x) for x in input().split()]
    print(summarize(values))


main()
""",
)

task(
    "m-palindromes",
    "Read a count n and then n words; print the words that are palindromes, in input order.",
    "maintainability", [],
    stdin_tests("3\nlevel\nhouse\nnoon\n", "1\nabc\n", "2\na\nzz\n", "0\n"),
    """
def is_palindrome(word: str) -> bool:
    return word == word[::-1]


def main() -> None:
    n = int(input())
    for _ in range(n):
        word = input().strip()
        if is_palindrome(word):
            print(word)


main()
""",
    candidate="""
def is_palindrome(word: str) -> bool:
    return word == word[::-1]
    print("checked", word)


def main() -> None:
    n = int(input())
    for _ in range(n):
        word = input().strip()
        if is_palindrome(word):
            print(word)


main()
""",
)


def run_reference(t, source, test):
    with tempfile.TemporaryDirectory() as d:
        d = Path(d)
        (d / "candidate.py").write_text(source)
        env = {"PATH": "/usr/bin:/bin", "HOME": str(d), "LANG": "C.UTF-8", "PYTHONHASHSEED": "0"}
        for f in t["fixtures"]:
            if f["kind"] == "sqlite_script":
                db = d / "fixture.db"
                conn = sqlite3.connect(db)
                conn.executescript(f["payload"])
                conn.commit()
                conn.close()
                env["FIXTURE_DB"] = str(db)
            else:
                for rel, content in f["payload"].items():
                    p = d / rel
                    p.parent.mkdir(parents=True, exist_ok=True)
                    p.write_text(content)
        nonce = secrets.token_hex(16)
        (d / ".pa_nonce").write_text(nonce)
        env["PA_NONCE_FILE"] = str(d / ".pa_nonce")
        if t["entry_point"]:
            env["PA_SHIM_MODE"] = "entry"
            env["PA_ENTRY"] = t["entry_point"]
        proc = subprocess.run(
            [sys.executable, "-I", str(SHIM), str(d / "candidate.py"), *test["argv"]],
            input=test["stdin_payload"], capture_output=True, text=True, cwd=d, env=env, timeout=30,
        )
        trailer = proc.stderr.rstrip("\n").rsplit("\n", 1)[-1]
        if trailer != f"{nonce}|status=clean|exc=-":
            raise SystemExit(f"{t['task_id']}: reference solution failed: {proc.stderr}")
        return "\n".join(l.rstrip() for l in proc.stdout.split("\n")).rstrip("\n")


def record(obj):
    return json.dumps(obj, ensure_ascii=False, sort_keys=False)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    tasks, solutions, candidates, empties = [], [], [], []
    for t in TASKS:
        unit_tests = []
        for i, test in enumerate(t["tests"], 1):
            unit_tests.append({
                "test_id": f"t{i}",
                "stdin_payload": test["stdin_payload"],
                "argv": test["argv"],
                "expected_stdout": run_reference(t, t["solution"], test),
                "timeout_ms": TIMEOUT_MS,
            })
        tasks.append({
            "schema_version": 1,
            "task_id": t["task_id"],
            "prompt": t["prompt"],
            "mode": t["mode"],
            "cwe_tags": t["cwe_tags"],
            "unit_tests": unit_tests,
            "fixtures": t["fixtures"],
            "entry_point": t["entry_point"],
        })
        solutions.append({"schema_version": 1, "candidate_id": f"{t['task_id']}/reference", "task_id": t["task_id"], "source": t["solution"]})
        candidates.append({"schema_version": 1, "candidate_id": f"{t['task_id']}/sample", "task_id": t["task_id"], "source": t["candidate"]})
        empties.append({"schema_version": 1, "candidate_id": f"{t['task_id']}/empty", "task_id": t["task_id"], "source": ""})
    refactor = [
        {"schema_version": 1, "candidate_id": f"refactor/{p.stem}", "task_id": "sql-products", "source": p.read_text()}
        for p in sorted(REFACTOR_STAGES.glob("stage*.py"))
    ]
    for name, rows in [("tasks.jsonl", tasks), ("solutions.jsonl", solutions), ("candidates.jsonl", candidates),
                       ("empty_candidates.jsonl", empties), ("refactor_candidates.jsonl", refactor)]:
        (OUT / name).write_text("".join(record(r) + "\n" for r in rows))
    print(f"{len(tasks)} tasks, {sum(len(t['unit_tests']) for t in tasks)} tests written to {OUT}")


if __name__ == "__main__":
    main()
