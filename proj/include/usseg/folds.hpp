#ifndef USSEG_FOLDS_HPP
#define USSEG_FOLDS_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace usseg {

struct FoldPlan {
    std::vector<std::vector<std::string>> folds;
    uint64_t seed = 0;
};

// Seeded shuffle, then split as evenly as possible with the larger folds
// first (23 ids / 5 folds -> sizes [5,5,5,4,4]).
FoldPlan make_folds(std::vector<std::string> ids, int n, uint64_t seed);

} // namespace usseg
#endif
