#include "stfe/martingale.hpp"

#include <string>

namespace stfe {

std::vector<MartingaleValue> martingale_residual(const SplitPath& path, const NoiseModel& model,
                                                 const TestFunctionSet& phis, double t)
{
    if (!(phis == path.phis))
        throw ParameterError("path was recorded with a different set of test functions");
    if (model.mode_count() != path.noise_modes)
        throw ParameterError("path was recorded with a different noise model");
    for (const DiagnosticsRow& row : path.series.rows) {
        if (row.time != t && row.snapped_time != t)
            continue;
        std::vector<MartingaleValue> out;
        for (std::size_t p = 0; p < row.residual.size(); ++p)
            out.push_back({row.residual[p], row.qvar[p]});
        return out;
    }
    throw DomainError("time " + std::to_string(t) + " is not a recorded sample time");
}

}  // namespace stfe
