#include "cibs/report.h"

int main(int argc, char** argv) { return cibs::run_cli(argc, argv); }
