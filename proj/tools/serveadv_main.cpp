#include "serveadv/cli.hpp"

int main(int argc, char** argv) { return serveadv::run_cli(argc, argv); }
