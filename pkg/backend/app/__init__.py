# bilanz: statement ontology, Z-score scoring and rule mining
