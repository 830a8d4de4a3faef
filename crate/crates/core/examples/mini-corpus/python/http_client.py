import urllib.parse
import urllib.request


def build_url(base, params):
    return base + "?" + urllib.parse.urlencode(params)


def fetch(url):
    with urllib.request.urlopen(url, timeout=5) as resp:
        return resp.read()
