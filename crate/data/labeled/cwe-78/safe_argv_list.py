import subprocess
import sys

directory = sys.argv[1]
out = subprocess.run(["ls", "-la", directory], capture_output=True, text=True)
print(out.stdout)
