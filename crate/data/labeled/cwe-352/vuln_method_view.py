from flask.views import MethodView


class AccountView(MethodView):
    def get(self, account_id):
        return {"id": account_id}

    def post(self, account_id):
        return {"id": account_id, "closed": True}
