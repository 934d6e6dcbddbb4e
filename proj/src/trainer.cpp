#include "multsl/trainer.hpp"

#include <cstring>

namespace multsl {

TrainedModel train_model(const Dataset& dataset, const SplitSpec& split,
                         const ModelConfig& config, const ChannelParams& channel,
                         const TrainParams& params) {
    config.validate();
    channel.validate();
    if (config.N_H != dataset.config.N_H || config.N_W != dataset.config.N_W) {
        throw ConfigError("train_model: model frame resolution differs from dataset");
    }

    TrainedModel model;
    model.config = config;
    model.ue = UESegment::init(config, params.seed);
    model.bs = BSSegment::init(config, params.seed + 0x9e3779b97f4a7c15ULL);
    model.std_spec = fit_standardizer(dataset, split.train);

    AdamState ue_state = AdamState::like(model.ue.params());
    AdamState bs_state = AdamState::like(model.bs.params());
    AdamHyper hyper;  // paper defaults: lr 1e-3, beta 0.9/0.999

    const std::size_t n_layer2 = count_upper_layer_weights(model.ue);
    LatencyTimeline timeline = build_timeline(dataset.powers_dbm, config, n_layer2, channel);
    ChannelClock clock(timeline);

    auto val_rmse = [&]() {
        const auto records =
            evaluate(dataset, split.valid, config, model.ue, model.bs, model.std_spec);
        return records.empty() ? 0.0 : rmse(records);
    };

    model.log.push_back({0, 0, 0.0, val_rmse()});

    for (std::size_t epoch = 1; epoch <= params.epochs; ++epoch) {
        const auto batches = make_batches(dataset, split.train, config.L, config.S,
                                          params.batch_size, params.seed, epoch - 1,
                                          model.std_spec);
        if (batches.empty()) throw ConfigError("train_model: training split too small");
        for (const SampleBatch& batch : batches) {
            if (params.split) {
                MessageLog log;
                run_training_step(config, model.ue, model.bs, ue_state, bs_state, hyper, batch,
                                  params.wire, &clock, params.capture ? &log : nullptr);
                if (params.capture) model.captured.push_back(std::move(log));
            } else {
                monolithic_training_step(config, model.ue, model.bs, ue_state, bs_state, hyper,
                                         batch);
                clock.tick();
            }
        }
        const std::uint64_t n = clock.steps_taken();
        model.log.push_back({epoch, n, elapsed_time(n, timeline).t_n_s, val_rmse()});
    }
    return model;
}

std::vector<PredictionRecord> evaluate(const Dataset& dataset, const IndexRange& range,
                                       const ModelConfig& config, const UESegment& ue,
                                       const BSSegment& bs, const Standardizer& std_spec) {
    const std::size_t L = config.L, S = config.S;
    const std::size_t H = dataset.config.N_H, W = dataset.config.N_W;
    std::vector<PredictionRecord> records;
    if (range.lo < 1 || range.hi > dataset.size()) {
        throw ConfigError("evaluate: range outside dataset");
    }
    for (std::size_t k = range.lo + L - 1; k + S <= range.hi; ++k) {
        Tensor frames({L, 1, H, W});
        std::vector<double> powers(L);
        for (std::size_t t = 0; t < L; ++t) {
            const std::size_t idx = k - L + 1 + t;
            std::memcpy(frames.data.data() + t * H * W, dataset.frames[idx - 1].data.data(),
                        H * W * sizeof(double));
            powers[t] = std_spec.standardize(dataset.powers_dbm[idx - 1]);
        }
        const Prediction p = predict(config, ue, bs, frames, powers);
        PredictionRecord rec;
        rec.k = k;
        rec.p_hat_dbm = std_spec.destandardize(p.p_hat_std);
        rec.p_actual_dbm = dataset.powers_dbm[k + S - 1];
        rec.label = dataset.labels[k + S - 1];
        records.push_back(rec);
    }
    return records;
}

std::vector<Tensor> ue_outputs(const Dataset& dataset, const IndexRange& range,
                               const UESegment& ue) {
    const std::size_t H = dataset.config.N_H, W = dataset.config.N_W;
    std::vector<Tensor> outputs;
    for (std::size_t k = range.lo; k <= range.hi; ++k) {
        Tensor frames({1, 1, H, W}, dataset.frames[k - 1].data);
        Tensor pooled = ue_forward(ue, frames);
        outputs.emplace_back(std::vector<std::size_t>{1, pooled.dim(2), pooled.dim(3)},
                             std::move(pooled.data));
    }
    return outputs;
}

std::vector<Tensor> raw_frames(const Dataset& dataset, const IndexRange& range) {
    std::vector<Tensor> frames;
    for (std::size_t k = range.lo; k <= range.hi; ++k) frames.push_back(dataset.frames[k - 1]);
    return frames;
}

}  // namespace multsl
