#include "degbench/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "degbench/error.hpp"
#include "degbench/optim.hpp"

namespace degbench {

namespace {

Tensor batch_tensor(const std::vector<Sample>& data, const std::vector<size_t>& order,
                    size_t begin, size_t end, int side) {
    std::vector<Image> images;
    images.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) {
        const Image& img = data[order[i]].image;
        images.push_back(img.height == side && img.width == side ? img
                                                                 : resize_bilinear(img, side, side));
    }
    return image_batch_to_tensor(images);
}

std::vector<int> batch_labels(const std::vector<Sample>& data, const std::vector<size_t>& order,
                              size_t begin, size_t end) {
    std::vector<int> labels;
    labels.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) labels.push_back(data[order[i]].label);
    return labels;
}

int argmax_row(const std::vector<float>& scores) {
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

}  // namespace

double evaluate_top1(const Model& model, const std::vector<Sample>& samples, int batch_size) {
    if (samples.empty()) throw UsageError("evaluate_top1: empty sample list");
    const int side = model.config().input_side;
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    int64_t hits = 0;
    for (size_t begin = 0; begin < samples.size(); begin += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(samples.size(), begin + static_cast<size_t>(batch_size));
        const Tensor x = batch_tensor(samples, order, begin, end, side);
        const auto scores = model.predict(x);
        for (size_t i = 0; i < scores.size(); ++i)
            if (argmax_row(scores[i]) == samples[order[begin + i]].label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainResult train_model(Model& model, const std::vector<Sample>& data, const TrainHyper& hp,
                        uint64_t seed) {
    if (data.empty()) throw UsageError("train_model: empty dataset");
    if (hp.batch_size < 1 || hp.epochs < 1) throw UsageError("train_model: bad hyperparameters");
    if (hp.optimizer != "adam" && hp.optimizer != "sgd")
        throw UsageError("train_model: unknown optimizer '" + hp.optimizer + "'");

    const int side = model.config().input_side;

    // deterministic validation split
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Prng split_rng(seed, 501);
    for (size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[split_rng.next_below(i + 1)]);
    size_t val_count = static_cast<size_t>(std::llround(hp.val_fraction * data.size()));
    if (val_count >= data.size()) val_count = 0;
    std::vector<size_t> train_idx(order.begin(), order.end() - static_cast<int64_t>(val_count));
    std::vector<Sample> val_set;
    for (size_t i = order.size() - val_count; i < order.size(); ++i)
        val_set.push_back(data[order[i]]);

    auto params = model.trainable_params();
    std::vector<AdamState> adam_states(params.size());

    TrainResult result;
    double best_val = -1.0;
    int stale_epochs = 0;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        Prng shuffle_rng(seed, 1000 + static_cast<uint64_t>(epoch));
        std::vector<size_t> perm = train_idx;
        for (size_t i = perm.size() - 1; i > 0; --i)
            std::swap(perm[i], perm[shuffle_rng.next_below(i + 1)]);

        double loss_sum = 0.0;
        int64_t seen = 0, correct = 0;
        size_t batch_index = 0;
        for (size_t begin = 0; begin < perm.size();
             begin += static_cast<size_t>(hp.batch_size), ++batch_index) {
            const size_t end = std::min(perm.size(), begin + static_cast<size_t>(hp.batch_size));
            const Tensor x = batch_tensor(data, perm, begin, end, side);
            const auto labels = batch_labels(data, perm, begin, end);

            Prng dropout_rng =
                Prng(seed, 77).split(static_cast<uint64_t>(epoch)).split(batch_index);
            const ForwardResult fr = model.forward(x, /*training=*/true, &dropout_rng, &labels);
            const Tensor loss = model.loss(fr, labels);
            const double loss_value = loss.item();
            if (!std::isfinite(loss_value))
                throw NumericError("train_model: non-finite loss at epoch " +
                                   std::to_string(epoch));
            loss_sum += loss_value * static_cast<double>(end - begin);

            const auto& scores = fr.scores.data();
            const int classes = model.classes();
            for (size_t i = 0; i < labels.size(); ++i) {
                int best = 0;
                for (int cls = 1; cls < classes; ++cls)
                    if (scores[i * static_cast<size_t>(classes) + cls] >
                        scores[i * static_cast<size_t>(classes) + best])
                        best = cls;
                if (best == labels[i]) ++correct;
            }
            seen += static_cast<int64_t>(labels.size());

            for (auto& p : params) p.zero_grad();
            backward(loss);
            if (hp.optimizer == "adam")
                adam_step(params, adam_states, hp.lr, hp.beta1, hp.beta2, hp.eps);
            else
                sgd_step(params, hp.lr);
            for (auto& p : params) p.zero_grad();
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(seen);
        stats.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        if (!val_set.empty()) {
            stats.val_acc = evaluate_top1(model, val_set);
            if (stats.val_acc > best_val) {
                best_val = stats.val_acc;
                stale_epochs = 0;
            } else {
                ++stale_epochs;
            }
        }
        result.history.push_back(stats);
        result.epochs_run = epoch + 1;
        result.final_train_acc = stats.train_acc;
        result.best_val_acc = best_val;
        if (hp.verbose)
            std::fprintf(stderr, "epoch %d loss %.4f train_acc %.4f val_acc %.4f\n", epoch,
                         stats.train_loss, stats.train_acc, stats.val_acc);

        if (stats.train_acc >= hp.target_train_acc) break;
        if (!val_set.empty() && stats.val_acc >= hp.target_val_acc) break;
        if (hp.patience > 0 && !val_set.empty() && stale_epochs >= hp.patience) break;
    }
    return result;
}

}  // namespace degbench
