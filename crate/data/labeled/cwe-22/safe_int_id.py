import sys

doc_id = int(sys.argv[1])
with open(f"/data/docs/{doc_id}.txt") as fh:
    print(fh.read())
