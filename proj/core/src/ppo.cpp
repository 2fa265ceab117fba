#include "rldyn/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rldyn::ppo {

void PpoConfig::validate(std::size_t batch_size) const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("PpoConfig: clip_epsilon must be in (0,1)");
  }
  if (epochs < 1) throw std::invalid_argument("PpoConfig: epochs must be >= 1");
  if (minibatch_size < 2) {
    throw std::invalid_argument("PpoConfig: minibatch_size must be >= 2 "
                                "(advantage normalization needs it)");
  }
  if (minibatch_size > batch_size) {
    throw std::invalid_argument("PpoConfig: minibatch_size (" +
                                std::to_string(minibatch_size) +
                                ") exceeds batch size (" +
                                std::to_string(batch_size) + ")");
  }
  if (entropy_coeff < 0.0 || value_coeff < 0.0 || pfo_coeff < 0.0) {
    throw std::invalid_argument("PpoConfig: loss coefficients must be >= 0");
  }
  if (!(max_grad_norm > 0.0)) {
    throw std::invalid_argument("PpoConfig: max_grad_norm must be > 0");
  }
}

ad::NodePtr ppo_clip_objective(const ad::NodePtr& new_log_probs,
                               const Matrix& old_log_probs,
                               const Matrix& advantages, double clip_epsilon) {
  return ad::reduce(
      ad::ppo_clip_surrogate(new_log_probs, old_log_probs, advantages, clip_epsilon),
      ad::Reduce::mean);
}

ad::NodePtr pfo_penalty(const nets::ForwardTrace& trace,
                        const std::vector<Matrix>& stored_preactivations,
                        PfoScope scope) {
  if (scope == PfoScope::off) {
    throw std::invalid_argument("pfo_penalty: scope is off");
  }
  if (stored_preactivations.size() != trace.preacts.size()) {
    throw std::invalid_argument("pfo_penalty: stored probe has " +
                                std::to_string(stored_preactivations.size()) +
                                " layers, trace has " +
                                std::to_string(trace.preacts.size()));
  }
  const std::size_t first =
      scope == PfoScope::last ? trace.preacts.size() - 1 : std::size_t{0};
  ad::NodePtr acc;
  for (std::size_t l = first; l < trace.preacts.size(); ++l) {
    require_same_shape(trace.preacts[l]->value, stored_preactivations[l],
                       "pfo_penalty");
    ad::NodePtr sq = ad::square(
        ad::sub(trace.preacts[l], ad::constant(stored_preactivations[l])));
    ad::NodePtr per_sample = ad::row_sum(sq);
    acc = acc ? ad::add(acc, per_sample) : per_sample;
  }
  return ad::reduce(acc, ad::Reduce::mean);
}

namespace {

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out(r, c) = m(rows[r], c);
  return out;
}

std::vector<Matrix> take_probe_rows(const nets::FeatureProbe& probe,
                                    const std::vector<std::size_t>& rows) {
  std::vector<Matrix> out;
  out.reserve(probe.pre_activations.size());
  for (const Matrix& layer : probe.pre_activations) out.push_back(take_rows(layer, rows));
  return out;
}

}  // namespace

LossResult total_loss(const RolloutBatch& batch, const std::vector<std::size_t>& rows,
                      const nets::NetworkParams& actor,
                      const nets::NetworkParams& critic, const PpoConfig& cfg) {
  if (rows.size() < 2) {
    throw std::invalid_argument("total_loss: minibatch must have >= 2 samples");
  }

  Matrix obs = take_rows(batch.observations, rows);
  ad::NodePtr obs_node = ad::constant(obs);
  nets::ForwardTrace actor_trace = nets::forward_graph(actor, obs_node);

  // Critic head: shares the actor's trunk nodes when configured, so both
  // losses backpropagate into the same layers.
  ad::NodePtr value_node;
  if (cfg.shared_trunk) {
    value_node = ad::linear(actor_trace.acts.back(), critic.out_w, critic.out_b);
  } else {
    nets::ForwardTrace critic_trace = nets::forward_graph(critic, obs_node);
    value_node = critic_trace.value;
  }

  // New log-probs of the stored actions.
  ad::NodePtr new_log_probs;
  if (batch.continuous) {
    Matrix u = take_rows(batch.pre_squash, rows);
    new_log_probs = nets::tanhnormal_log_prob_node(actor_trace.mean, actor_trace.std, u);
  } else {
    std::vector<std::size_t> acts(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) acts[i] = batch.actions[rows[i]];
    new_log_probs = nets::categorical_log_prob_node(actor_trace.logits, acts);
  }

  // Advantages normalized within the minibatch.
  std::vector<double> adv(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) adv[i] = batch.advantages[rows[i]];
  std::vector<double> norm_adv = gae::normalize_advantages(adv);
  Matrix adv_mat(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) adv_mat(i, 0) = norm_adv[i];
  Matrix old_lp = take_rows(batch.old_log_probs, rows);

  ad::NodePtr clip_obj =
      ppo_clip_objective(new_log_probs, old_lp, adv_mat, cfg.clip_epsilon);

  ad::NodePtr entropy_node;
  if (batch.continuous) {
    // No closed form for TanhNormal entropy; single-sample estimator
    // -log pi(sampled action).
    entropy_node = ad::neg(ad::reduce(new_log_probs, ad::Reduce::mean));
  } else {
    entropy_node = nets::categorical_entropy_mean_node(actor_trace.logits);
  }

  Matrix ret(rows.size(), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) ret(i, 0) = batch.returns[rows[i]];
  ad::NodePtr value_loss =
      ad::reduce(ad::square(ad::sub(value_node, ad::constant(ret))), ad::Reduce::mean);

  LossResult result;
  ad::NodePtr total = ad::neg(clip_obj);
  if (cfg.pfo_scope != PfoScope::off && cfg.pfo_coeff > 0.0) {
    std::vector<Matrix> stored = take_probe_rows(batch.actor_probe, rows);
    ad::NodePtr pfo = pfo_penalty(actor_trace, stored, cfg.pfo_scope);
    total = ad::add(total, ad::scale(pfo, cfg.pfo_coeff));
    result.pfo = pfo->value.scalar();
  }
  if (cfg.entropy_coeff > 0.0) {
    total = ad::sub(total, ad::scale(entropy_node, cfg.entropy_coeff));
  }
  total = ad::add(total, ad::scale(value_loss, cfg.value_coeff));

  result.total = total;
  result.clip_objective = clip_obj->value.scalar();
  result.entropy = entropy_node->value.scalar();
  result.value = value_loss->value.scalar();
  return result;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(const TrainSetup& setup)
    : setup_(setup),
      action_rng_(Rng::derive(setup.seed, "actions")),
      shuffle_rng_(Rng::derive(setup.seed, "shuffle")) {
  const std::size_t batch = setup.num_envs * setup.steps_per_env;
  setup_.ppo.validate(batch);
  if (setup.num_envs == 0 || setup.steps_per_env == 0) {
    throw std::invalid_argument("Trainer: num_envs and steps_per_env must be > 0");
  }

  for (std::size_t i = 0; i < setup.num_envs; ++i) {
    envs::EnvConfig cfg = setup.env;
    cfg.seed = splitmix_seed(setup.seed, i);
    envs_.push_back(envs::make_environment(cfg));
    episode_seeders_.push_back(Rng::derive(setup.seed, "env/" + std::to_string(i)));
  }
  discrete_ = envs_[0]->discrete_actions();
  obs_dim_ = envs_[0]->observation_dim();

  if (setup.normalize_observations) {
    // Initial uniform-policy rollout; the normalizer stays frozen afterwards.
    Rng norm_episode_rng = Rng::derive(setup.seed, "normfit_episodes");
    Rng norm_action_rng = Rng::derive(setup.seed, "normfit_actions");
    envs::EnvConfig cfg = setup.env;
    cfg.seed = splitmix_seed(setup.seed, 0xabcd);
    auto env = envs::make_environment(cfg);
    Matrix obs_stack(setup.normalizer_steps, obs_dim_);
    std::size_t episodes = 0;
    std::vector<double> obs = env->reset(norm_episode_rng.next_u64());
    for (std::size_t row = 0; row < setup.normalizer_steps; ++row) {
      for (std::size_t j = 0; j < obs_dim_; ++j) obs_stack(row, j) = obs[j];
      std::vector<double> action;
      if (discrete_) {
        action = {static_cast<double>(norm_action_rng.uniform_int(env->action_count()))};
      } else {
        for (std::size_t k = 0; k < env->action_dim(); ++k)
          action.push_back(2.0 * norm_action_rng.uniform() - 1.0);
      }
      envs::StepResult res = env->step(action);
      if (res.terminated || res.truncated) {
        ++episodes;
        obs = env->reset(norm_episode_rng.next_u64());
      } else {
        obs = res.observation;
      }
    }
    normalizer_ = envs::Normalizer::fit(obs_stack, episodes,
                                        setup.normalizer_min_episodes);
  }

  nets::MlpSpec actor_spec;
  actor_spec.input_dim = obs_dim_;
  actor_spec.hidden_widths = setup.hidden_widths;
  actor_spec.activation = setup.activation;
  if (discrete_) {
    actor_spec.head = nets::HeadKind::categorical;
    actor_spec.head_dim = envs_[0]->action_count();
  } else {
    actor_spec.head = nets::HeadKind::tanhnormal;
    actor_spec.head_dim = envs_[0]->action_dim();
  }
  actor_ = nets::init_mlp(actor_spec, splitmix_seed(setup.seed, 0x0ac7));

  if (setup_.ppo.shared_trunk) {
    critic_ = nets::make_shared_trunk_critic(actor_, splitmix_seed(setup.seed, 0xc417));
  } else {
    nets::MlpSpec critic_spec = actor_spec;
    critic_spec.head = nets::HeadKind::value;
    critic_spec.head_dim = 1;
    critic_ = nets::init_mlp(critic_spec, splitmix_seed(setup.seed, 0xc417));
  }
  actor_.register_in(params_, "actor");
  critic_.register_in(params_, "critic");
  adam_ = optim::AdamState(params_.scalar_count());

  current_obs_.resize(setup.num_envs);
  episode_return_acc_.assign(setup.num_envs, 0.0);
  for (std::size_t i = 0; i < setup.num_envs; ++i) {
    current_obs_[i] = envs_[i]->reset(episode_seeders_[i].next_u64());
  }
}

ad::NodePtr Trainer::new_log_prob_node(const RolloutBatch& batch,
                                       const std::vector<std::size_t>& rows,
                                       const nets::ForwardTrace& trace) const {
  if (batch.continuous) {
    Matrix u = take_rows(batch.pre_squash, rows);
    return nets::tanhnormal_log_prob_node(trace.mean, trace.std, u);
  }
  std::vector<std::size_t> acts(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) acts[i] = batch.actions[rows[i]];
  return nets::categorical_log_prob_node(trace.logits, acts);
}

RolloutBatch Trainer::collect_rollout() {
  const std::size_t n = setup_.num_envs;
  const std::size_t s = setup_.steps_per_env;
  const std::size_t batch_size = n * s;

  RolloutBatch batch;
  batch.size = batch_size;
  batch.num_envs = n;
  batch.steps_per_env = s;
  batch.continuous = !discrete_;

  const std::size_t act_dim = discrete_ ? 1 : envs_[0]->action_dim();
  batch.observations = Matrix(batch_size, obs_dim_);
  if (discrete_) {
    batch.actions.resize(batch_size);
  } else {
    batch.pre_squash = Matrix(batch_size, act_dim);
  }
  batch.rewards.resize(batch_size);
  batch.terminated.resize(batch_size);
  batch.values.resize(batch_size);

  // Rewards as seen by GAE: mid-batch truncation folds gamma * V(terminal
  // obs) into the reward and marks the step terminal, which is exactly
  // bootstrapping with V(S_T) at a recursion reset.
  std::vector<double> gae_rewards(batch_size);

  auto value_of = [&](const std::vector<double>& raw_obs) {
    std::vector<double> in =
        normalizer_.fitted() ? normalizer_.apply(raw_obs) : raw_obs;
    Matrix m(1, obs_dim_);
    for (std::size_t j = 0; j < obs_dim_; ++j) m(0, j) = in[j];
    auto [v, probe] = nets::critic_forward(critic_, m);
    return v[0];
  };

  for (std::size_t t = 0; t < s; ++t) {
    Matrix obs_mat(n, obs_dim_);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> in = normalizer_.fitted()
                                   ? normalizer_.apply(current_obs_[i])
                                   : current_obs_[i];
      for (std::size_t j = 0; j < obs_dim_; ++j) obs_mat(i, j) = in[j];
    }
    nets::DistParams dist = nets::actor_forward(actor_, obs_mat).first;
    std::vector<double> values = nets::critic_forward(critic_, obs_mat).first;

    std::vector<std::vector<double>> env_actions(n);
    std::vector<std::size_t> picked(n);
    Matrix u;
    if (discrete_) {
      auto sample = nets::categorical_sample_logprob_entropy(dist.logits, action_rng_);
      picked = sample.actions;
      for (std::size_t i = 0; i < n; ++i)
        env_actions[i] = {static_cast<double>(sample.actions[i])};
    } else {
      auto sample = nets::tanhnormal_sample_logprob(dist.mean, dist.std, action_rng_);
      u = sample.pre_squash;
      for (std::size_t i = 0; i < n; ++i) {
        env_actions[i].resize(act_dim);
        for (std::size_t k = 0; k < act_dim; ++k)
          env_actions[i][k] = sample.actions(i, k);
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = i * s + t;
      for (std::size_t j = 0; j < obs_dim_; ++j)
        batch.observations(row, j) = obs_mat(i, j);
      if (discrete_) {
        batch.actions[row] = picked[i];
      } else {
        for (std::size_t k = 0; k < act_dim; ++k) batch.pre_squash(row, k) = u(i, k);
      }
      batch.values[row] = values[i];

      envs::StepResult res = envs_[i]->step(env_actions[i]);
      batch.rewards[row] = res.reward;
      episode_return_acc_[i] += res.reward;

      double gae_r = res.reward;
      bool term = res.terminated;
      if (res.truncated) {
        gae_r += setup_.ppo.gae.gamma * value_of(res.observation);
        term = true;
      }
      gae_rewards[row] = gae_r;
      batch.terminated[row] = term;

      if (res.terminated || res.truncated) {
        batch.finished_episode_returns.push_back(episode_return_acc_[i]);
        episode_return_acc_[i] = 0.0;
        current_obs_[i] = envs_[i]->reset(episode_seeders_[i].next_u64());
      } else {
        current_obs_[i] = res.observation;
      }
    }
  }

  // GAE per env segment, bootstrapping with V of the env's next observation.
  batch.advantages.resize(batch_size);
  batch.returns.resize(batch_size);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> seg_r(s), seg_v(s);
    std::vector<bool> seg_t(s);
    for (std::size_t t = 0; t < s; ++t) {
      seg_r[t] = gae_rewards[i * s + t];
      seg_v[t] = batch.values[i * s + t];
      seg_t[t] = batch.terminated[i * s + t];
    }
    const double bootstrap = seg_t[s - 1] ? 0.0 : value_of(current_obs_[i]);
    gae::GaeResult res = gae::compute_gae(seg_r, seg_v, bootstrap, seg_t, setup_.ppo.gae);
    for (std::size_t t = 0; t < s; ++t) {
      batch.advantages[i * s + t] = res.advantages[t];
      batch.returns[i * s + t] = res.returns[t];
    }
  }

  // Snapshot head outputs, probes, and old log-probs through the same code
  // path the optimization uses, so the epoch-1 ratio is exactly 1.
  ad::NodePtr all_obs = ad::constant(batch.observations);
  nets::ForwardTrace actor_trace = nets::forward_graph(actor_, all_obs);
  nets::ForwardTrace critic_trace = nets::forward_graph(critic_, all_obs);
  batch.actor_probe = nets::probe_from(actor_trace);
  batch.critic_probe = nets::probe_from(critic_trace);
  batch.old_dist.kind = discrete_ ? nets::HeadKind::categorical : nets::HeadKind::tanhnormal;
  if (discrete_) {
    batch.old_dist.logits = actor_trace.logits->value;
  } else {
    batch.old_dist.mean = actor_trace.mean->value;
    batch.old_dist.std = actor_trace.std->value;
  }

  std::vector<std::size_t> all_rows(batch_size);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  batch.old_log_probs = new_log_prob_node(batch, all_rows, actor_trace)->value;

  return batch;
}

std::optional<LossResult> Trainer::optimize_on(const RolloutBatch& batch) {
  if (setup_.ppo.adam_reset_each_batch) adam_.reset();

  std::vector<std::size_t> order(batch.size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t mb = setup_.ppo.minibatch_size;

  LossResult last{};
  for (std::size_t epoch = 0; epoch < setup_.ppo.epochs; ++epoch) {
    shuffle_rng_.shuffle(order);
    for (std::size_t start = 0; start + mb <= batch.size; start += mb) {
      std::vector<std::size_t> rows(order.begin() + start, order.begin() + start + mb);
      LossResult loss = total_loss(batch, rows, actor_, critic_, setup_.ppo);
      if (!std::isfinite(loss.total->value.scalar())) return std::nullopt;

      params_.zero_gradients();
      ad::backward(loss.total);
      std::vector<double> grads = params_.flatten_gradients();
      optim::clip_grad_norm(grads, setup_.ppo.max_grad_norm);
      std::vector<double> values = params_.flatten_values();
      optim::adam_step(values, grads, adam_, setup_.ppo.adam);
      params_.load_values(values);
      last = std::move(loss);
    }
  }
  return last;
}

std::vector<double> Trainer::batch_ratios(const RolloutBatch& batch) const {
  std::vector<std::size_t> all_rows(batch.size);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  nets::ForwardTrace trace =
      nets::forward_graph(actor_, ad::constant(batch.observations));
  ad::NodePtr nlp = new_log_prob_node(batch, all_rows, trace);
  std::vector<double> ratios(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    ratios[i] = std::exp(nlp->value(i, 0) - batch.old_log_probs(i, 0));
  }
  return ratios;
}

TrainResult Trainer::run(const TrainHooks& hooks) {
  const std::size_t batch_size = setup_.num_envs * setup_.steps_per_env;
  const std::size_t total_batches =
      std::max<std::size_t>(1, setup_.total_env_steps / batch_size);

  std::optional<diag::CapacityProbe> probe;
  if (setup_.capacity_enabled) {
    nets::MlpSpec actor_spec = actor_.spec;
    nets::MlpSpec critic_spec = critic_.spec;
    diag::CapacityFitConfig budget = setup_.capacity_budget;
    budget.adam = setup_.ppo.adam;  // capacity fits reuse the training optimizer settings
    probe = diag::make_capacity_probe(
        actor_spec, critic_spec, setup_.env, normalizer(),
        setup_.capacity_dataset_steps, budget,
        Rng::derive(setup_.seed, "capacity_probe").next_u64());
  }

  TrainResult result;
  auto cadence_hits = [](double cadence, std::size_t b, std::size_t total) {
    // True when progress crosses a multiple of `cadence` at batch b (0-based).
    const double before = static_cast<double>(b) / static_cast<double>(total);
    const double after = static_cast<double>(b + 1) / static_cast<double>(total);
    return b == 0 ||
           std::floor(after / cadence + 1e-12) > std::floor(before / cadence + 1e-12);
  };

  std::optional<double> last_return_mean, last_return_min, last_return_max;
  std::size_t last_return_count = 0;

  for (std::size_t b = 0; b < total_batches; ++b) {
    RolloutBatch batch = collect_rollout();
    result.env_steps += batch.size;

    if (!batch.finished_episode_returns.empty()) {
      const auto& fr = batch.finished_episode_returns;
      double mean = std::accumulate(fr.begin(), fr.end(), 0.0) /
                    static_cast<double>(fr.size());
      last_return_mean = mean;
      last_return_min = *std::min_element(fr.begin(), fr.end());
      last_return_max = *std::max_element(fr.begin(), fr.end());
      last_return_count = fr.size();
    }

    std::optional<LossResult> loss = optimize_on(batch);

    const bool emit = cadence_hits(setup_.diagnostics_cadence, b, total_batches) ||
                      b + 1 == total_batches || !loss.has_value();
    if (emit) {
      diag::DiagnosticsRecord rec;
      rec.step = result.env_steps;
      rec.batch_index = b;
      rec.return_mean = last_return_mean;
      rec.return_min = last_return_min;
      rec.return_max = last_return_max;
      rec.return_count = last_return_count;

      if (discrete_) {
        std::vector<double> ent = nets::categorical_entropy(batch.old_dist.logits);
        rec.entropy = std::accumulate(ent.begin(), ent.end(), 0.0) /
                      static_cast<double>(ent.size());
      } else {
        double s = 0.0;
        for (std::size_t i = 0; i < batch.size; ++i) s -= batch.old_log_probs(i, 0);
        rec.entropy = s / static_cast<double>(batch.size);
      }
      rec.policy_variance = diag::policy_variance_across_states(batch.old_dist);
      rec.dead_neuron_count = diag::dead_neurons(batch.actor_probe, setup_.activation);
      diag::FeatureStats fs = diag::feature_stats(batch.actor_probe);
      rec.preactivation_norm = fs.preactivation_norm;
      rec.feature_norm = fs.feature_norm;
      rec.actor_rank = diag::rank_report(batch.actor_probe.features());
      rec.critic_rank = diag::rank_report(batch.critic_probe.features());

      if (loss.has_value()) {
        // Ratios of the whole batch after the optimization phase, against
        // the collector policy.
        diag::RatioStats rs = diag::ratio_stats(batch_ratios(batch),
                                                setup_.ppo.clip_epsilon,
                                                batch.continuous);
        rec.ratio_above_mean = rs.above_mean;
        rec.ratio_below_mean = rs.below_mean;
        rec.excess_ratio = rs.excess;
        rec.losses.total = loss->total->value.scalar();
        rec.losses.clip_objective = loss->clip_objective;
        rec.losses.pfo = loss->pfo;
        rec.losses.entropy = loss->entropy;
        rec.losses.value = loss->value;
      } else {
        rec.nan_abort = true;
      }

      if (probe.has_value() && loss.has_value() &&
          cadence_hits(setup_.capacity_cadence, b, total_batches)) {
        rec.capacity_actor = diag::capacity_loss(actor_, *probe, diag::CapacityHead::actor);
        rec.capacity_critic =
            diag::capacity_loss(critic_, *probe, diag::CapacityHead::critic);
        if (hooks.on_checkpoint) {
          hooks.on_checkpoint(result.env_steps, actor_, critic_,
                              setup_.ppo.shared_trunk);
        }
      }

      if (hooks.on_record) hooks.on_record(rec);
      result.records.push_back(std::move(rec));
    }

    if (!loss.has_value()) {
      result.aborted = true;
      break;
    }
  }
  return result;
}

}  // namespace rldyn::ppo
