items = input().split(",")
html = "<ul>"
for item in items:
    html += "<li>{}</li>".format(item.strip())
html += "</ul>"
print(html)
