import os
import subprocess

os.system("date")
print(subprocess.check_output(["uname", "-a"]).decode())
