import os
import shutil

ROOT = "/tmp/workspaces"
user = input().strip()
shutil.rmtree(os.path.join(ROOT, user))
