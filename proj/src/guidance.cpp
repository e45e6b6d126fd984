#include "crackguide/guidance.hpp"

#include "crackguide/parallel.hpp"
#include "crackguide/random.hpp"

namespace crackguide::mog {

ImageFit fit_image(const FeatureMap& fm, const ProbMap& prediction, const std::string& image_id,
                   const EmOptions& options, std::vector<std::string>* events) {
  InitComponents init = init_per_image(fm, prediction);
  std::vector<GaussianComponent> comps;
  const bool has_crack = init.crack.has_value();
  if (has_crack) comps.push_back(*init.crack);
  comps.push_back(init.background);
  for (auto& c : comps) c.image_id = image_id;

  EmResult em = em_fit_image(fm, std::move(comps), options);
  if (events)
    for (auto& e : em.events) events->push_back("image " + image_id + ": " + e);

  ImageFit fit{image_id, {}, {}, 0.0, 0.0};
  for (std::size_t k = 0; k < em.components.size(); ++k) {
    const bool is_crack = has_crack && em.survivors[k] == 0;
    (is_crack ? fit.crack : fit.background) = em.components[k];
    (is_crack ? fit.crack_mass : fit.background_mass) = em.mass[k];
  }
  return fit;
}

model::GuidanceTargets MogGuidance::refresh(const std::vector<model::TrainItem>& train,
                                            const std::vector<ProbMap>& predictions, int epoch) {
  if (predictions.size() != train.size()) throw ValidationError("guidance: prediction count mismatch");
  const std::size_t n = train.size();
  std::vector<ImageFit> fits(n);
  std::vector<std::vector<std::string>> events(n);
  parallel_for(n, options_.threads, [&](std::size_t i) {
    EmOptions em = options_.em;
    em.subsample_seed =
        derive_seed(options_.seed, {stream::kSubsample, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i)});
    fits[i] = fit_image(train[i].features, predictions[i], train[i].id, em, &events[i]);
  });

  model::GuidanceTargets out;
  for (auto& e : events)
    for (auto& s : e) out.events.push_back(std::move(s));

  bool any_background = false;
  for (const auto& f : fits) any_background |= f.background.has_value();
  if (!any_background) {
    out.degenerate = true;
    last_model_.reset();
    return out;
  }
  MogModel model = pool_mixtures(fits);
  if (model.degenerate()) {
    out.degenerate = true;
    last_model_ = std::move(model);
    return out;
  }

  out.targets.resize(n);
  parallel_for(n, options_.threads, [&](std::size_t i) {
    PseudoLabels pl = generate_pseudo_labels(train[i].features, model, options_.crack_prior);
    if (options_.soft) {
      out.targets[i] = std::move(pl.crack_posterior);
    } else {
      losses::SoftTarget t(pl.labels.height(), pl.labels.width());
      for (std::size_t p = 0; p < t.size(); ++p) t[p] = pl.labels[p];
      out.targets[i] = std::move(t);
    }
  });
  last_model_ = std::move(model);
  return out;
}

}  // namespace crackguide::mog
