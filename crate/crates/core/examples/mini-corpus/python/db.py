import sqlite3


def connect(path):
    conn = sqlite3.connect(path, timeout=30)
    conn.execute("PRAGMA journal_mode=WAL")
    return conn


def count_rows(conn, table):
    cur = conn.execute("SELECT COUNT(*) FROM " + table)
    return cur.fetchone()[0]
