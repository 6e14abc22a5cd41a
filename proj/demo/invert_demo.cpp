// Copyright 2026 The zsinvert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Inverts one toy embedding with the library API and prints each stage.
//
//   invert_demo [corpus.jsonl] [doc_id]

#include <iostream>
#include <string>
#include <vector>

#include "zsinvert/io.hpp"
#include "zsinvert/metrics.hpp"
#include "zsinvert/pipeline.hpp"
#include "zsinvert/toy.hpp"

int main(int argc, char** argv) {
  using namespace zsinvert;
  const std::string corpus_path = argc > 1 ? argv[1] : ZSINVERT_DEMO_CORPUS;
  const std::string wanted = argc > 2 ? argv[2] : "";

  const auto corpus = ReadCorpus(corpus_path);
  std::vector<std::string> texts;
  for (const auto& d : corpus) texts.push_back(d.text);

  ToyEmbedder encoder;
  ToyLM lm = ToyLM::FromCorpus(texts);
  ScriptedChat corrector = ScriptedChat::EchoFirstCandidate();

  const CorpusDoc* doc = &corpus.front();
  for (const auto& d : corpus) {
    if (d.doc_id == wanted) doc = &d;
  }

  // The attacker sees only this vector.
  QueryMeter setup;
  std::vector<std::string> one{doc->text};
  const Embedding target = embed_batch(encoder, one, setup).front();

  Backends b{encoder, lm, &corrector};
  PipelineParams params;
  params.decode = {12, 12, 5, ""};
  params.n_iter = 3;
  QueryMeter meter;
  const InversionRecord rec = invert(target, params, PromptTemplates{}, b, meter, doc->doc_id);

  std::cout << "target   " << doc->text << "\n";
  if (rec.seed) std::cout << "seed     " << rec.seed->text << "  cos=" << *rec.seed->score << "\n";
  for (const auto& it : rec.iterations) {
    std::cout << "iter " << it.iteration << "   " << it.refined.text << "  cos=" << *it.refined.score;
    if (it.corrected) std::cout << "  -> " << it.corrected->text;
    std::cout << "\n";
  }
  std::cout << "final    " << rec.final_text << "  F1=" << token_f1(doc->text, rec.final_text)
            << "\nqueries  encoder_texts=" << rec.ledger.encoder_texts
            << " lm_calls=" << rec.ledger.lm_calls << " chat_calls=" << rec.ledger.chat_calls
            << "\n";
  return rec.error ? 1 : 0;
}
