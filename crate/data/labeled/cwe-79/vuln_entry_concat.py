def render_comment(author, body):
    return "<div class='comment'><b>" + author + "</b>: " + body + "</div>"
