def render_rows(rows):
    cells = ""
    for r in rows:
        cells = cells + "<tr><td>%s</td></tr>" % r
    return "<table>%s</table>" % cells
