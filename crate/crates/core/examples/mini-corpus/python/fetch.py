import requests


def fetch_json(url, token):
    headers = {"Authorization": f"Bearer {token}"}
    resp = requests.get(url, headers=headers, timeout=10)
    resp.raise_for_status()
    return resp.json()


def post_form(url, fields):
    return requests.post(url, data=fields, timeout=5)
