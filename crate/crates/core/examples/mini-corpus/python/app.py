from flask import Flask, jsonify, request

app = Flask(__name__)


@app.route("/items", methods=["POST"])
def create_item():
    payload = request.get_json(force=True)
    return jsonify(id=1, name=payload["name"]), 201
