from tvwave.cli import run_cli


def main():
    run_cli()


if __name__ == "__main__":
    main()
