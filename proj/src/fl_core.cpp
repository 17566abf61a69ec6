#include "fedsec/fl_core.hpp"

namespace fedsec {

template ModelParams<double> init_model<double>(const MlpSpec&, std::uint64_t);
template ModelParams<double> train_local<double>(const ModelParams<double>&, const Dataset<double>&,
                                                 const TrainingPlan&, std::uint64_t,
                                                 const AdamConfig&);
template double evaluate<double>(const ModelParams<double>&, const Dataset<double>&);
template ModelParams<double> fedavg<double>(std::span<const ModelParams<double>>,
                                            std::span<const double>);
template FederatedResult<double> federated_train<double>(const ModelParams<double>&,
                                                         std::span<const Dataset<double>>,
                                                         const Dataset<double>&,
                                                         const TrainingPlan&, std::uint64_t,
                                                         Aggregation);

}  // namespace fedsec
