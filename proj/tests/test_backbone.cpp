#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "dgua/backbone.hpp"
#include "dgua/rng.hpp"

using namespace dgua;

namespace {

TensorPtr random_input(std::uint64_t seed, std::size_t rows, std::size_t cols) {
  Rng rng(seed);
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = rng.uniform(-1.0, 1.0);
  return Tensor::create({rows, cols}, std::move(data));
}

// plain feed-forward over the same weights, no tape
std::vector<double> plain_forward(const GroupedNetwork& net, std::vector<double> row) {
  for (const auto& group : net.groups()) {
    for (const auto& layer : group) {
      const auto& w = layer.weight();
      const auto& b = layer.bias();
      std::vector<double> next(layer.out_dim(), 0.0);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        double acc = b->values()[o];
        for (std::size_t i = 0; i < layer.in_dim(); ++i) acc += row[i] * w->at(i, o);
        next[o] = layer.activation() == Activation::relu ? std::max(0.0, acc) : acc;
      }
      row = std::move(next);
    }
  }
  return row;
}

}  // namespace

TEST_CASE("architecture spec validation") {
  ArchitectureSpec spec;
  spec.validate();
  CHECK(spec.num_groups() == 3);
  CHECK(spec.num_classes() == 3);

  ArchitectureSpec one_group;
  one_group.group_widths = {{16}};
  one_group.embed_dim = 16;
  CHECK_THROWS_AS(one_group.validate(), ContractError);

  ArchitectureSpec wrong_embed;
  wrong_embed.embed_dim = 8;
  CHECK_THROWS_AS(wrong_embed.validate(), ContractError);

  ArchitectureSpec zero_width;
  zero_width.group_widths = {{32}, {0}, {16}};
  CHECK_THROWS_AS(zero_width.validate(), ContractError);
}

TEST_CASE("group outputs have the spec shapes and chain consistently") {
  GroupedNetwork net(ArchitectureSpec{}, 3);
  auto x = random_input(4, 5, 8);
  Tape tape;
  auto outs = net.group_outputs(tape, x);
  REQUIRE(outs.size() == 3);
  CHECK(outs[0]->cols() == 32);
  CHECK(outs[1]->cols() == 32);
  CHECK(outs[2]->cols() == 16);
  for (const auto& o : outs) CHECK(o->rows() == 5);

  for (std::size_t g = 1; g <= 3; ++g) {
    Tape t;
    auto direct = net.forward_groups(t, x, 1, g);
    for (std::size_t i = 0; i < direct->numel(); ++i) {
      CHECK(direct->values()[i] == outs[g - 1]->values()[i]);
    }
  }

  // composition identity: 1..G equals 1..1 then 2..G
  Tape t2;
  auto full = net.forward_groups(t2, x, 1, 3);
  auto first = net.forward_groups(t2, x, 1, 1);
  auto rest = net.forward_groups(t2, first, 2, 3);
  for (std::size_t i = 0; i < full->numel(); ++i) {
    CHECK(full->values()[i] == rest->values()[i]);
  }
}

TEST_CASE("zero weights produce zero output") {
  GroupedNetwork net(ArchitectureSpec{}, 9);
  for (auto& p : net.parameters()) {
    for (auto& v : p.tensor->values_mut()) v = 0.0;
  }
  Tape tape;
  auto out = net.forward_groups(tape, random_input(1, 2, 8), 1, 3);
  for (double v : out->values()) CHECK(v == 0.0);
}

TEST_CASE("forward matches an independent plain evaluation") {
  ArchitectureSpec spec;
  spec.group_widths = {{12, 10}, {9}, {16}};
  GroupedNetwork net(spec, 21);
  auto x = random_input(22, 3, 8);
  Tape tape;
  auto out = net.forward_groups(tape, x, 1, 3);
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> row(8);
    for (std::size_t c = 0; c < 8; ++c) row[c] = x->at(r, c);
    const auto expect = plain_forward(net, row);
    REQUIRE(expect.size() == 16);
    for (std::size_t c = 0; c < 16; ++c) {
      CHECK(out->at(r, c) == doctest::Approx(expect[c]).epsilon(1e-13));
    }
  }
}

TEST_CASE("relu placement leaves only the final layer linear") {
  ArchitectureSpec spec;
  spec.group_widths = {{12, 10}, {9}, {14, 16}};
  GroupedNetwork net(spec, 5);
  std::vector<const LinearLayer*> layers;
  for (const auto& g : net.groups()) {
    for (const auto& l : g) layers.push_back(&l);
  }
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    CHECK(layers[i]->activation() == Activation::relu);
  }
  CHECK(layers.back()->activation() == Activation::none);

  // embeddings can therefore go negative
  Tape tape;
  auto emb = net.forward_groups(tape, random_input(6, 64, 8), 1, 3);
  bool any_negative = false;
  for (double v : emb->values()) any_negative |= v < 0.0;
  CHECK(any_negative);
}

TEST_CASE("classifier head") {
  ClassifierHead head(16, 3, 7);
  CHECK(head.embed_dim() == 16);
  CHECK(head.num_classes() == 3);

  Tape tape;
  auto zero_head = ClassifierHead(4, 3, 1);
  for (auto& p : zero_head.parameters()) {
    for (auto& v : p.tensor->values_mut()) v = 0.0;
  }
  auto logits = zero_head.classify(tape, Tensor::zeros({2, 4}));
  CHECK(logits->cols() == 3);
  for (double v : logits->values()) CHECK(v == 0.0);

  // duplicate plain matrix evaluation
  auto emb = random_input(13, 2, 16);
  auto out = head.classify(tape, emb);
  const auto& w = head.linear().weight();
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = head.linear().bias()->values()[c];
      for (std::size_t i = 0; i < 16; ++i) acc += emb->at(r, i) * w->at(i, c);
      CHECK(out->at(r, c) == doctest::Approx(acc).epsilon(1e-13));
    }
  }

  CHECK_THROWS_AS(head.classify(tape, Tensor::zeros({2, 5})), DimensionError);
}

TEST_CASE("twin construction shares shapes but not values") {
  ArchitectureSpec spec;
  GroupedNetwork a(spec, 1), b(spec, 2);
  CHECK(architectural_twins(a, b));

  std::size_t count_a = 0, count_b = 0;
  for (const auto& p : a.parameters()) count_a += p.tensor->numel();
  for (const auto& p : b.parameters()) count_b += p.tensor->numel();
  CHECK(count_a == count_b);

  bool any_diff = false;
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].tensor->numel(); ++j) {
      any_diff |= pa[i].tensor->values()[j] != pb[i].tensor->values()[j];
    }
  }
  CHECK(any_diff);

  b.copy_parameters_from(a);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].tensor->numel(); ++j) {
      CHECK(pa[i].tensor->values()[j] == pb[i].tensor->values()[j]);
    }
  }

  ArchitectureSpec other;
  other.group_widths = {{32}, {24}, {16}};
  GroupedNetwork c(other, 3);
  CHECK_FALSE(architectural_twins(a, c));
  CHECK_THROWS_AS(c.copy_parameters_from(a), ArchitectureError);
}

TEST_CASE("inference ignores generator parameters entirely") {
  ArchitectureSpec spec;
  GroupedNetwork extractor(spec, 1), suasg(spec, 2);
  ClassifierHead head(16, 3, 3);
  auto x = random_input(8, 4, 8);

  auto predict = [&] {
    Tape tape;
    auto emb = extractor.forward_groups(tape, x, 1, 3);
    auto logits = head.classify(tape, emb);
    return std::vector<double>(logits->values().begin(), logits->values().end());
  };
  const auto before = predict();
  for (auto& p : suasg.parameters()) {
    for (auto& v : p.tensor->values_mut()) v += 123.0;
  }
  const auto after = predict();
  CHECK(before == after);
}

TEST_CASE("group range and width errors") {
  GroupedNetwork net(ArchitectureSpec{}, 3);
  Tape tape;
  auto x = random_input(1, 2, 8);
  CHECK_THROWS_AS(net.forward_groups(tape, x, 2, 1), ContractError);
  CHECK_THROWS_AS(net.forward_groups(tape, x, 0, 3), ContractError);
  CHECK_THROWS_AS(net.forward_groups(tape, x, 1, 4), ContractError);

  try {
    net.forward_groups(tape, x, 2, 3);  // width 8 into group 2 expecting 32
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("group 2") != std::string::npos);
  }
}

TEST_CASE("parameters_through takes a group prefix") {
  GroupedNetwork net(ArchitectureSpec{}, 3);
  CHECK(net.parameters_through(3, "n").size() == net.parameters("n").size());
  const auto partial = net.parameters_through(2, "n");
  CHECK(partial.size() == 4);  // two groups, weight+bias each
  for (const auto& p : partial) {
    CHECK(p.name.find("n.g3.") == std::string::npos);
  }
  CHECK_THROWS_AS(net.parameters_through(4, "n"), ArchitectureError);
}
