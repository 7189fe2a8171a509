import sys

import tracefem.runner.arguments
import tracefem.runner.commands

parser = tracefem.runner.arguments.shishkin_parser()

if __name__ == '__main__':
    args = parser.parse_args()
    sys.exit(tracefem.runner.commands.cmd_shishkin(args))
