// spikemem: train, ablate, profile and cluster memory-augmented spiking networks.

#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "spikemem/checkpoint.hpp"
#include "spikemem/silhouette.hpp"

namespace {

using namespace spikemem;
using namespace spikemem::cli;

void add_common(CLI::App* cmd, CliFlags& f) {
    cmd->add_option("--config", f.config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--dataset", f.dataset, "synthetic or nmnist")->check(CLI::IsMember({"synthetic", "nmnist"}));
    cmd->add_option("--data-root", f.data_root, "N-MNIST root holding Train/ and Test/ (else $NMNIST_ROOT)");
    cmd->add_option("--seed", f.seeds, "Seed; repeat for several runs")->take_all();
    cmd->add_option("--epochs", f.epochs, "Training epochs");
    cmd->add_option("--batch-size", f.batch_size, "Mini-batch size");
    cmd->add_option("--train-samples", f.train_samples, "Synthetic training samples");
    cmd->add_option("--val-samples", f.val_samples, "Synthetic validation samples");
    cmd->add_option("--test-samples", f.test_samples, "Synthetic test samples");
    cmd->add_flag("--quick", f.quick, "Small synthetic splits and few epochs");
    cmd->add_flag("--reference-encoder", f.reference_encoder, "64/128-channel encoder instead of the desk preset");
    cmd->add_flag("--no-pool", f.no_pool, "Disable the 2x2 pooling after LIF1 and LIF2");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memory-augmented spiking network toolkit"};
    app.require_subcommand(1);

    CliFlags train_flags, ablate_flags, profile_flags, cluster_flags;
    std::string train_model = "M1";
    ProfileFlags profile;
    ClusterFlags cluster;

    auto* train = app.add_subcommand("train", "Train one configuration and write run.json, epochs.csv, model.ckpt");
    add_common(train, train_flags);
    train->add_option("--model", train_model, "M1..M5");

    auto* ablate = app.add_subcommand("ablate", "Train M1-M5 (or --models) and emit the ablation table");
    add_common(ablate, ablate_flags);
    ablate->add_option("--models", ablate_flags.models, "Subset of M1..M5")->delimiter(',');

    auto* prof = app.add_subcommand("profile", "Energy report from a checkpoint, or the published SynOps with --golden");
    add_common(prof, profile_flags);
    prof->add_flag("--golden", profile.golden, "Reproduce the reference energy table from its SynOps column");
    prof->add_option("--checkpoint", profile.checkpoint, "Checkpoint to profile on the test split");

    auto* clus = app.add_subcommand("cluster", "Silhouette analysis of LIF3 rate features");
    add_common(clus, cluster_flags);
    clus->add_option("--checkpoint", cluster.checkpoint, "Checkpoint to analyse");
    clus->add_option("--max-samples", cluster.max_samples, "Seeded subsample size (0 = all)");
    clus->add_option("--split", cluster.split, "val or test")->check(CLI::IsMember({"val", "test"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train) {
            train_flags.models = {train_model};
            return cmd_train(resolve_config(train_flags), std::cerr);
        }
        if (*ablate) return cmd_ablate(resolve_config(ablate_flags), std::cerr);
        if (*prof) return cmd_profile(resolve_config(profile_flags), profile, std::cerr);
        if (*clus) return cmd_cluster(resolve_config(cluster_flags), cluster, std::cerr);
    } catch (const DatasetMissingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kMissingResource;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kMissingResource;
    } catch (const UndefinedMetricError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUndefinedMetric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kUsage;
}
