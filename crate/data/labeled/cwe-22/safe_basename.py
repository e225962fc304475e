import os

UPLOADS = "/srv/uploads"
name = os.path.basename(input())
with open(os.path.join(UPLOADS, name)) as fh:
    print(fh.read())
