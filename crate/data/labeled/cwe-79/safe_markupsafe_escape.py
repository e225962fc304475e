from markupsafe import escape


def render_comment(author, body):
    return "<div><b>" + escape(author) + "</b>: " + escape(body) + "</div>"
