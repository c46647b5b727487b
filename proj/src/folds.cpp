#include "usseg/folds.hpp"

#include "usseg/errors.hpp"
#include "usseg/rng.hpp"

namespace usseg {

FoldPlan make_folds(std::vector<std::string> ids, int n, uint64_t seed) {
    if (n < 1) throw ValidationError("make_folds: n must be >= 1");
    if (static_cast<size_t>(n) > ids.size())
        throw ValidationError("make_folds: more folds than ids (" + std::to_string(n) + " > " +
                              std::to_string(ids.size()) + ")");
    Rng rng(seed);
    rng.shuffle(ids);

    FoldPlan plan;
    plan.seed = seed;
    const size_t base = ids.size() / n;
    const size_t rem = ids.size() % n;
    size_t pos = 0;
    for (int f = 0; f < n; ++f) {
        size_t len = base + (static_cast<size_t>(f) < rem ? 1 : 0);
        plan.folds.emplace_back(ids.begin() + pos, ids.begin() + pos + len);
        pos += len;
    }
    return plan;
}

} // namespace usseg
