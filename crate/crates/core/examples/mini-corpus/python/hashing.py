import hashlib
import hmac


def digest(data):
    return hashlib.sha256(data).hexdigest()


def sign(key, message):
    return hmac.new(key, message, hashlib.sha256).hexdigest()


def verify(key, message, signature):
    expected = sign(key, message)
    return hmac.compare_digest(expected, signature)
