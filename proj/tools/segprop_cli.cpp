// Command-line front end; subcommands wired up module by module.
#include <cstdio>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::fprintf(stderr, "segprop: not wired yet\n");
    return 1;
}
