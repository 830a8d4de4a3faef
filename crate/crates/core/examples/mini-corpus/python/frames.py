import pandas as pd


def load_sales(path):
    df = pd.read_csv(path, parse_dates=["date"])
    return df.dropna(subset=["amount"])


def monthly(df):
    grouped = df.groupby(pd.Grouper(key="date", freq="M"))
    return grouped.sum()


def write_summary(df, path):
    pd.DataFrame.to_csv(df, path, index=False)
