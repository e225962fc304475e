age = int(input())
print("<span class='age'>%d</span>" % age)
