import subprocess
import sys

directory = sys.argv[1]
result = subprocess.run(f"ls -la {directory}", shell=True, capture_output=True, text=True)
print(result.stdout)
