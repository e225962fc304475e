def read_report(report_name):
    with open("/srv/reports/" + report_name, "r") as f:
        return f.read()
