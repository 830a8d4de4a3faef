import matplotlib.pyplot as plt


def line_chart(xs, ys, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, linewidth=2)
    fig.savefig(path, dpi=150)
    plt.close(fig)
