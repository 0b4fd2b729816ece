import sys

from pytorch_mpdbm.cli import main

if __name__ == '__main__':
    sys.exit(main())
