// Acceptance gate: runs every numbered criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exits nonzero if any fail.

#include <cstdio>
#include <cstring>
#include <set>
#include <string>

#include "hyperctl/acceptance.hpp"

int main(int argc, char** argv) {
    std::set<int> only;
    std::string config_dir;
    for (int a = 1; a < argc; ++a) {
        if (std::strcmp(argv[a], "--only") == 0 && a + 1 < argc) {
            std::string list = argv[++a];
            size_t pos = 0;
            while (pos < list.size()) {
                size_t comma = list.find(',', pos);
                only.insert(std::atoi(list.substr(pos, comma - pos).c_str()));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
        } else if (std::strcmp(argv[a], "--config-dir") == 0 && a + 1 < argc) {
            config_dir = argv[++a];
        } else {
            std::fprintf(stderr, "usage: %s [--only 1,2,...] [--config-dir DIR]\n", argv[0]);
            return 2;
        }
    }
    (void)config_dir;

    auto results = hyperctl::run_acceptance(only);
    int failures = 0;
    for (const auto& r : results)
        if (!r.pass) ++failures;
    std::printf("%zu criteria run, %d failed\n", results.size(), failures);
    return failures == 0 ? 0 : 1;
}
