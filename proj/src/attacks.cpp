#include "degbench/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "degbench/error.hpp"
#include "degbench/metrics.hpp"
#include "degbench/ops.hpp"

namespace degbench {

std::vector<Image> fgsm_untargeted(const Model& model, const std::vector<Image>& batch,
                                   const std::vector<int>& labels, double eps) {
    if (batch.empty()) throw UsageError("fgsm: empty batch");
    if (batch.size() != labels.size()) throw UsageError("fgsm: label count mismatch");
    if (eps < 0.0) throw UsageError("fgsm: eps must be >= 0");
    if (eps == 0.0) return batch;  // bitwise identity

    Tensor x = image_batch_to_tensor(batch);
    x.set_requires_grad(true);
    const ForwardResult fr = model.forward(x, /*training=*/false, nullptr, &labels);
    const Tensor loss = model.loss(fr, labels);
    backward(loss);
    if (!x.has_grad())
        throw NumericError("fgsm: model produced no input gradient (non-differentiable path)");
    const auto& grad = x.grad();

    const int side = model.config().input_side;
    std::vector<Image> out;
    out.reserve(batch.size());
    for (size_t b = 0; b < batch.size(); ++b) {
        Image adv(side, side);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < side; ++y)
                for (int xx = 0; xx < side; ++xx) {
                    const float g = grad[((b * 3 + c) * static_cast<size_t>(side) + y) * side + xx];
                    const double step = g > 0.0f ? eps : (g < 0.0f ? -eps : 0.0);
                    adv.at(y, xx, c) =
                        std::clamp(batch[b].at(y, xx, c) + step, 0.0, 1.0);
                }
        out.push_back(std::move(adv));
    }
    return out;
}

std::vector<AdvSweepPoint> adversarial_sweep(const Model& model, const std::vector<Sample>& data,
                                             const std::vector<double>& eps_list,
                                             int batch_size) {
    if (data.empty()) throw UsageError("adversarial_sweep: empty dataset");
    if (eps_list.empty()) throw UsageError("adversarial_sweep: empty eps list");

    const int side = model.config().input_side;
    std::vector<Image> images;
    std::vector<int> labels;
    for (const auto& s : data) {
        images.push_back(s.image.height == side && s.image.width == side
                             ? s.image
                             : resize_bilinear(s.image, side, side));
        labels.push_back(s.label);
    }

    std::vector<AdvSweepPoint> points;
    for (const double eps : eps_list) {
        AdvSweepPoint pt;
        pt.eps = eps;
        pt.n = static_cast<int>(data.size());
        std::vector<EvalRecord> records;
        double psnr_sum = 0.0;
        for (size_t begin = 0; begin < images.size(); begin += static_cast<size_t>(batch_size)) {
            const size_t end = std::min(images.size(), begin + static_cast<size_t>(batch_size));
            const std::vector<Image> chunk(images.begin() + static_cast<int64_t>(begin),
                                           images.begin() + static_cast<int64_t>(end));
            const std::vector<int> chunk_labels(labels.begin() + static_cast<int64_t>(begin),
                                                labels.begin() + static_cast<int64_t>(end));
            const auto adv = fgsm_untargeted(model, chunk, chunk_labels, eps);
            const auto scores = model.predict(image_batch_to_tensor(adv));
            for (size_t i = 0; i < adv.size(); ++i) {
                EvalRecord rec;
                rec.sample_id = static_cast<int>(begin + i);
                rec.true_label = chunk_labels[i];
                rec.ranked_classes = rank_classes(scores[i]);
                records.push_back(std::move(rec));
                const double p = psnr(adv[i], chunk[i]);
                if (std::isinf(p)) {
                    ++pt.infinite_psnr;
                } else {
                    psnr_sum += p;
                    ++pt.finite_psnr;
                }
            }
        }
        pt.top1 = top_k_accuracy(records, 1);
        pt.top3 = top_k_accuracy(records, std::min(3, model.classes()));
        pt.mean_psnr = pt.finite_psnr > 0 ? psnr_sum / pt.finite_psnr : 0.0;
        points.push_back(pt);
    }
    return points;
}

}  // namespace degbench
