from PIL import Image


def thumbnail(path, out, size):
    img = Image.open(path)
    img.thumbnail((size, size))
    img.save(out, format="PNG")
