#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "degbench/data.hpp"
#include "degbench/model.hpp"

namespace degbench {

struct TrainHyper {
    int epochs = 30;
    int batch_size = 32;
    double lr = 1e-3;
    std::string optimizer = "adam";  // "adam" or "sgd"
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double val_fraction = 0.1;   // carved from the training set; 0 disables
    int patience = 8;            // epochs without val improvement; 0 disables
    double target_val_acc = 2.0;   // early exit thresholds; > 1 disables
    double target_train_acc = 2.0;
    bool verbose = false;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = -1.0;  // -1 when no validation split
};

struct TrainResult {
    std::vector<EpochStats> history;
    double best_val_acc = -1.0;
    double final_train_acc = 0.0;
    int epochs_run = 0;
};

// Single-threaded minibatch training; bit-deterministic for a fixed
// (model seed, data, hyperparameters, seed).
TrainResult train_model(Model& model, const std::vector<Sample>& data, const TrainHyper& hp,
                        uint64_t seed);

// Top-1 accuracy of the model on samples (resized to the model input).
double evaluate_top1(const Model& model, const std::vector<Sample>& samples,
                     int batch_size = 64);

}  // namespace degbench
